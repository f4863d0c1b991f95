// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/data.hpp"

#include "et2m/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace et2m {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_seconds(std::string_view field, std::string_view line) {
    field = trim(field);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw MalformedLine("unparsable segment bound in caption line: " + std::string(line));
    }
    return v;
}

}  // namespace

void MotionSequence::validate() const {
    if (frames.rows() < 1 || frames.cols() < 1) throw DimensionMismatch("motion '" + id + "' is empty");
    if (!frames.allFinite()) throw DimensionMismatch("motion '" + id + "' has non-finite entries");
}

int CaptionRecord::verb_count() const {
    return static_cast<int>(std::count_if(pos_tokens.begin(), pos_tokens.end(), [](const PosToken& t) { return t.tag == "VERB"; }));
}

CaptionRecord parse_caption_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    std::vector<std::string_view> parts;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '#') {
            parts.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (parts.size() != 4) {
        throw MalformedLine("expected 3 '#' separators, found " + std::to_string(parts.size() - 1) + ": " + std::string(line));
    }
    CaptionRecord rec;
    rec.text = std::string(trim(parts[0]));
    if (rec.text.empty()) throw MalformedLine("empty caption text: " + std::string(line));
    rec.start_s = parse_seconds(parts[2], line);
    rec.end_s = parse_seconds(parts[3], line);
    if (rec.start_s > rec.end_s) throw MalformedLine("segment start after end: " + std::string(line));

    std::istringstream tokens{std::string(parts[1])};
    std::string tok;
    while (tokens >> tok) {
        const auto slash = tok.rfind('/');
        if (slash == std::string::npos) {
            // "and/ CCONJ": a tag separated from its slash by a stray space
            if (!rec.pos_tokens.empty() && rec.pos_tokens.back().tag.empty()) {
                rec.pos_tokens.back().tag = tok;
            } else {
                rec.pos_tokens.push_back({tok, ""});
            }
            continue;
        }
        rec.pos_tokens.push_back({tok.substr(0, slash), tok.substr(slash + 1)});
    }
    return rec;
}

std::string format_seconds(double s) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), s);
    std::string out(buf, ptr);
    if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
    return out;
}

std::string serialize_caption_line(const CaptionRecord& record) {
    std::string out = record.text;
    out.push_back('#');
    for (size_t i = 0; i < record.pos_tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += record.pos_tokens[i].word;
        out.push_back('/');
        out += record.pos_tokens[i].tag;
    }
    out.push_back('#');
    out += format_seconds(record.start_s);
    out.push_back('#');
    out += format_seconds(record.end_s);
    return out;
}

// ---- normalization ---------------------------------------------------------

NormalizationStats compute_stats(const std::vector<MotionSequence>& motions) {
    if (motions.empty()) throw DimensionMismatch("cannot compute statistics of an empty split");
    const auto dim = motions.front().dim();
    RowVec sum = RowVec::Zero(dim);
    double count = 0.0;
    for (const auto& m : motions) {
        if (m.dim() != dim) throw DimensionMismatch("motion dimension differs within split");
        sum += m.frames.colwise().sum();
        count += static_cast<double>(m.length());
    }
    NormalizationStats stats;
    stats.mean = sum / count;
    RowVec sq = RowVec::Zero(dim);
    for (const auto& m : motions) sq += (m.frames.rowwise() - stats.mean).array().square().matrix().colwise().sum();
    stats.std = (sq / count).array().sqrt().max(NormalizationStats::kMinStd).matrix();
    return stats;
}

namespace {
void check_stats(const MotionSequence& m, const NormalizationStats& s) {
    if (s.mean.size() != m.dim() || s.std.size() != m.dim()) {
        throw DimensionMismatch("normalization stats have " + std::to_string(s.mean.size()) + " channels, motion has " +
                                std::to_string(m.dim()));
    }
}
}  // namespace

MotionSequence normalize(const MotionSequence& motion, const NormalizationStats& stats) {
    check_stats(motion, stats);
    MotionSequence out = motion;
    const RowVec std = stats.std.array().max(NormalizationStats::kMinStd).matrix();
    out.frames = ((motion.frames.rowwise() - stats.mean).array().rowwise() / std.array()).matrix();
    return out;
}

MotionSequence denormalize(const MotionSequence& motion, const NormalizationStats& stats) {
    check_stats(motion, stats);
    MotionSequence out = motion;
    const RowVec std = stats.std.array().max(NormalizationStats::kMinStd).matrix();
    out.frames = (motion.frames.array().rowwise() * std.array()).matrix().rowwise() + stats.mean;
    return out;
}

// ---- dataset ---------------------------------------------------------------

const Sample* DatasetSplit::find(const std::string& id) const {
    for (const auto& s : pairs) {
        if (s.motion.id == id) return &s;
    }
    return nullptr;
}

std::vector<MotionSequence> DatasetSplit::motions() const {
    std::vector<MotionSequence> out;
    out.reserve(pairs.size());
    for (const auto& s : pairs) out.push_back(s.motion);
    return out;
}

void write_motion(const fs::path& bin_path, const MotionSequence& motion) {
    fs::create_directories(bin_path.parent_path());
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("cannot write " + bin_path.string());
    std::vector<float> row(static_cast<size_t>(motion.dim()));
    for (Eigen::Index r = 0; r < motion.length(); ++r) {
        for (Eigen::Index c = 0; c < motion.dim(); ++c) row[static_cast<size_t>(c)] = static_cast<float>(motion.frames(r, c));
        bin.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    auto meta_path = bin_path;
    meta_path.replace_extension(".meta");
    std::ofstream meta(meta_path);
    meta << "rows " << motion.length() << "\ncols " << motion.dim() << "\nfps " << format_seconds(motion.fps) << "\ndtype float32\n";
    if (!bin || !meta) throw IoError("failed writing " + bin_path.string());
}

MotionSequence read_motion(const fs::path& bin_path, const std::string& id) {
    auto meta_path = bin_path;
    meta_path.replace_extension(".meta");
    std::ifstream meta(meta_path);
    if (!meta) throw IoError("missing motion header " + meta_path.string());
    long rows = -1, cols = -1;
    double fps = 20.0;
    std::string key;
    while (meta >> key) {
        if (key == "rows") {
            meta >> rows;
        } else if (key == "cols") {
            meta >> cols;
        } else if (key == "fps") {
            meta >> fps;
        } else {
            std::string ignored;
            meta >> ignored;
        }
    }
    if (rows < 1 || cols < 1) throw IoError("bad motion header " + meta_path.string());
    std::ifstream bin(bin_path, std::ios::binary);
    std::vector<float> buf(static_cast<size_t>(rows * cols));
    bin.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!bin) throw IoError("truncated motion file " + bin_path.string());
    MotionSequence m;
    m.id = id.empty() ? bin_path.stem().string() : id;
    m.fps = fps;
    m.frames.resize(rows, cols);
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) m.frames(r, c) = buf[static_cast<size_t>(r * cols + c)];
    }
    return m;
}

std::vector<CaptionRecord> read_caption_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<CaptionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(parse_caption_line(line));
    }
    return out;
}

void write_split(const fs::path& root, const DatasetSplit& split) {
    fs::create_directories(root / "texts");
    fs::create_directories(root / "motions");
    fs::create_directories(root / "splits");
    std::ofstream ids(root / "splits" / (split.name + ".txt"));
    for (const auto& s : split.pairs) {
        ids << s.motion.id << '\n';
        write_motion(root / "motions" / (s.motion.id + ".bin"), s.motion);
        std::ofstream txt(root / "texts" / (s.motion.id + ".txt"));
        for (const auto& c : s.captions) txt << serialize_caption_line(c) << '\n';
        if (!s.segment_labels.empty()) {
            fs::create_directories(root / "labels");
            std::ofstream lab(root / "labels" / (s.motion.id + ".txt"));
            for (size_t k = 0; k < s.segment_labels.size(); ++k) {
                lab << s.segment_labels[k] << ' ' << s.segment_bounds[k] << ' ' << s.segment_bounds[k + 1] << '\n';
            }
        }
    }
    if (!ids) throw IoError("failed writing split list for " + split.name);
}

DatasetSplit read_split(const fs::path& root, const std::string& name, const std::optional<NormalizationStats>& train_stats) {
    std::ifstream ids(root / "splits" / (name + ".txt"));
    if (!ids) throw IoError("missing split list " + (root / "splits" / (name + ".txt")).string());
    DatasetSplit split;
    split.name = name;
    std::string id;
    while (std::getline(ids, id)) {
        id = std::string(trim(id));
        if (id.empty()) continue;
        Sample s;
        s.motion = read_motion(root / "motions" / (id + ".bin"), id);
        s.captions = read_caption_file(root / "texts" / (id + ".txt"));
        const auto label_path = root / "labels" / (id + ".txt");
        if (fs::exists(label_path)) {
            std::ifstream lab(label_path);
            int label = 0, b0 = 0, b1 = 0;
            while (lab >> label >> b0 >> b1) {
                if (s.segment_bounds.empty()) s.segment_bounds.push_back(b0);
                s.segment_labels.push_back(label);
                s.segment_bounds.push_back(b1);
            }
        }
        split.pairs.push_back(std::move(s));
    }
    split.normalization_stats = train_stats ? *train_stats : compute_stats(split.motions());
    return split;
}

}  // namespace et2m

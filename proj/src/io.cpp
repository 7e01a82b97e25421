#include "airshield/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "airshield/format.hpp"

namespace airshield::io {
namespace {

constexpr int kSignificantDigits = 9;

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == line.npos ? line.npos : next - pos));
        if (next == line.npos) break;
        pos = next + 1;
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    for (std::string_view line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void append_number(std::string& out, double v) { out += format_significant(v, kSignificantDigits); }

void append_columns(std::string& out, const ColumnVector& c) {
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        if (i > 0) out += ',';
        append_number(out, c[i]);
    }
}

ColumnVector parse_columns(std::span<const std::string_view> cells, std::size_t row) {
    ColumnVector c{};
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        try {
            c[i] = parse_double(cells[i]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("csv row " + std::to_string(row) + ": " + e.what());
        }
    }
    return c;
}

void expect_header(std::string_view got, const std::string& want) {
    if (got != want) throw std::invalid_argument("csv: unexpected header '" + std::string(got) + "'");
}

LineOfSight to_los(double v, std::size_t row) {
    if (v == -1.0) return LineOfSight::Blocked;
    if (v == 0.0) return LineOfSight::Obstructed;
    if (v == 1.0) return LineOfSight::Clear;
    throw std::invalid_argument("csv row " + std::to_string(row) + ": los must be -1, 0 or 1");
}

std::string labeled_header() { return records_header() + ",label,applied_epsilon"; }

}  // namespace

std::string records_header() {
    std::string h;
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        if (i > 0) h += ',';
        h += kColumnNames[i];
    }
    return h;
}

std::string records_to_csv(std::span<const ChannelRecord> records) {
    std::string out = records_header() + "\n";
    for (const ChannelRecord& r : records) {
        append_columns(out, to_columns(r));
        out += '\n';
    }
    return out;
}

std::vector<ChannelRecord> records_from_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw std::invalid_argument("csv: empty records file");
    expect_header(lines[0], records_header());
    std::vector<ChannelRecord> out;
    out.reserve(lines.size() - 1);
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto cells = split(lines[row], ',');
        if (cells.size() != kColumnCount) {
            throw std::invalid_argument("csv row " + std::to_string(row) + ": expected 12 cells");
        }
        const ColumnVector c = parse_columns(cells, row);
        ChannelRecord r{c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8], c[9], c[10], to_los(c[11], row)};
        out.push_back(r);
    }
    return out;
}

std::string labeled_to_csv(std::span<const adversary::LabeledSample> samples) {
    std::string out = labeled_header() + "\n";
    for (const auto& s : samples) {
        append_columns(out, join_columns(s.x, s.y));
        out += ',';
        out += std::to_string(s.label);
        out += ',';
        append_number(out, s.applied_epsilon);
        out += '\n';
    }
    return out;
}

std::vector<adversary::LabeledSample> labeled_from_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw std::invalid_argument("csv: empty labeled file");
    expect_header(lines[0], labeled_header());
    std::vector<adversary::LabeledSample> out;
    out.reserve(lines.size() - 1);
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto cells = split(lines[row], ',');
        if (cells.size() != kColumnCount + 2) {
            throw std::invalid_argument("csv row " + std::to_string(row) + ": expected 14 cells");
        }
        const ColumnVector c = parse_columns(cells, row);
        adversary::LabeledSample s;
        for (std::size_t i = 0; i < kColumnCount; ++i) {
            if (i == kPathlossColumn) s.y = c[i];
            else s.x.push_back(c[i]);
        }
        if (cells[kColumnCount] == "0") s.label = adversary::kBenign;
        else if (cells[kColumnCount] == "1") s.label = adversary::kMalicious;
        else throw std::invalid_argument("csv row " + std::to_string(row) + ": label must be 0 or 1");
        s.applied_epsilon = parse_double(cells[kColumnCount + 1]);
        s.source_index = row - 1;
        out.push_back(std::move(s));
    }
    return out;
}

std::string attributions_to_csv(std::span<const attribution::Attribution> attributions,
                                std::span<const std::size_t> sample_ids) {
    if (attributions.size() != sample_ids.size()) throw std::invalid_argument("attributions: id count mismatch");
    std::string out = "sample,base_value,prediction";
    if (!attributions.empty()) {
        for (const auto& name : attributions.front().feature_order) out += "," + name;
    }
    out += '\n';
    for (std::size_t k = 0; k < attributions.size(); ++k) {
        const auto& a = attributions[k];
        out += std::to_string(sample_ids[k]);
        out += ',';
        append_number(out, a.base_value);
        out += ',';
        append_number(out, a.prediction);
        for (double v : a.per_feature) {
            out += ',';
            append_number(out, v);
        }
        out += '\n';
    }
    return out;
}

std::string importance_to_csv(const attribution::GlobalImportance& g) {
    std::string out = "rank,feature,mean_abs_shapley\n";
    for (std::size_t r = 0; r < g.ranking.size(); ++r) {
        const std::size_t i = g.ranking[r];
        out += std::to_string(r + 1) + "," + g.feature_order[i] + ",";
        append_number(out, g.mean_abs[i]);
        out += '\n';
    }
    return out;
}

std::string importance_points_to_csv(const attribution::GlobalImportance& g) {
    std::string out = "feature,value,shapley\n";
    for (std::size_t i = 0; i < g.points.size(); ++i) {
        for (const auto& [value, phi] : g.points[i]) {
            out += g.feature_order[i] + ",";
            append_number(out, value);
            out += ',';
            append_number(out, phi);
            out += '\n';
        }
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace airshield::io

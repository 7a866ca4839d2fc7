#include "curio/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "curio/common.hpp"
#include "curio/io.hpp"

namespace curio::dataset {

namespace {

constexpr const char* kComment = "# curio dataset v1 config_hash=";
constexpr const char* kHeader =
    "obj_sx,obj_sy,obj_d,obj_type,"
    "act_x1,act_y1,act_z1,act_g1,act_x2,act_y2,act_z2,act_g2,act_x3,act_y3,act_z3,act_g3,"
    "eff_dx,eff_dy,eff_dz";
constexpr int kColumns = 19;

void append_value(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

double parse_double(const std::string& field, const std::filesystem::path& path) {
    if (field.empty()) throw ArtifactError("dataset: empty field in " + path.string());
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size())
        throw ArtifactError("dataset: malformed number '" + field + "' in " + path.string());
    return v;
}

}  // namespace

void save_csv(const std::filesystem::path& path, const Dataset& data, std::uint64_t config_hash) {
    std::string out;
    out.reserve(64 + data.size() * 24 * kColumns);
    out += kComment;
    out += to_hex(config_hash);
    out += '\n';
    out += kHeader;
    out += '\n';
    for (const Transition& t : data) {
        bool first = true;
        auto emit = [&](double v) {
            if (!first) out += ',';
            first = false;
            append_value(out, v);
        };
        for (double v : t.object) emit(v);
        for (double v : t.action) emit(v);
        for (double v : t.effect) emit(v);
        out += '\n';
    }
    io::atomic_write(path, out);
}

Dataset load_csv(const std::filesystem::path& path, std::uint64_t* config_hash_out) {
    const std::string text = io::read_file(path);
    const std::vector<std::string> lines = split_lines(text);
    if (lines.size() < 2) throw ArtifactError("dataset: missing header in " + path.string());
    if (lines[0].rfind(kComment, 0) != 0)
        throw ArtifactError("dataset: unrecognized format in " + path.string());
    const std::string hex = lines[0].substr(std::strlen(kComment));
    if (hex.size() != 16) throw ArtifactError("dataset: malformed config hash in " + path.string());
    std::uint64_t hash = 0;
    for (char c : hex) {
        int d;
        if (c >= '0' && c <= '9')
            d = c - '0';
        else if (c >= 'a' && c <= 'f')
            d = c - 'a' + 10;
        else
            throw ArtifactError("dataset: malformed config hash in " + path.string());
        hash = (hash << 4) | static_cast<std::uint64_t>(d);
    }
    if (config_hash_out) *config_hash_out = hash;
    if (lines[1] != kHeader) throw ArtifactError("dataset: unexpected columns in " + path.string());

    Dataset data;
    data.reserve(lines.size() - 2);
    for (std::size_t li = 2; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        if (line.empty()) continue;
        std::array<double, kColumns> vals{};
        int col = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t end = line.find(',', start);
            const bool last = end == std::string::npos;
            if (last) end = line.size();
            if (col >= kColumns)
                throw ArtifactError("dataset: too many columns in " + path.string());
            vals[static_cast<std::size_t>(col++)] = parse_double(line.substr(start, end - start), path);
            if (last) break;
            start = end + 1;
        }
        if (col != kColumns) throw ArtifactError("dataset: too few columns in " + path.string());
        Transition t;
        for (int i = 0; i < 4; ++i) t.object[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(i)];
        for (int i = 0; i < 12; ++i) t.action[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(4 + i)];
        for (int i = 0; i < 3; ++i) t.effect[static_cast<std::size_t>(i)] = vals[static_cast<std::size_t>(16 + i)];
        data.push_back(t);
    }
    return data;
}

std::uint64_t dataset_hash(const Dataset& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Transition& t : data) {
        h = fnv1a64(t.object.data(), sizeof(t.object), h);
        h = fnv1a64(t.action.data(), sizeof(t.action), h);
        h = fnv1a64(t.effect.data(), sizeof(t.effect), h);
    }
    return h;
}

}  // namespace curio::dataset

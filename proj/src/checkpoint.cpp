#include "curio/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "curio/config.hpp"
#include "curio/io.hpp"

using nlohmann::json;

namespace curio::ckpt {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'R', 'I', 'O', 'C', 'P', '1'};

std::uint64_t parse_hex(const std::string& s) {
    if (s.size() != 16) throw ArtifactError("checkpoint: malformed config hash");
    std::uint64_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9')
            d = c - '0';
        else if (c >= 'a' && c <= 'f')
            d = c - 'a' + 10;
        else
            throw ArtifactError("checkpoint: malformed config hash");
        v = (v << 4) | static_cast<std::uint64_t>(d);
    }
    return v;
}

}  // namespace

void save(const std::filesystem::path& path, const model::ModelParams& params,
          std::uint64_t config_hash) {
    json dir = json::array();
    std::string payload;
    model::visit_params(params, [&](const model::ParamRef& r) {
        const std::size_t count = r.rows * r.cols;
        dir.push_back({{"name", r.name},
                       {"rows", r.rows},
                       {"cols", r.cols},
                       {"offset", payload.size()}});
        payload.append(reinterpret_cast<const char*>(r.data), count * sizeof(double));
    });

    json header = {{"version", 1},
                   {"head", params.head == model::HeadMode::distribution ? "distribution" : "point"},
                   {"train_steps", params.train_steps},
                   {"config_hash", to_hex(config_hash)},
                   {"model", json::parse(config::dump_model_config(params.cfg))},
                   {"tensors", dir}};
    const std::string head_bytes = header.dump();
    if (head_bytes.size() > 0xffffffffull) throw ArtifactError("checkpoint: header too large");

    std::string out;
    out.reserve(8 + 4 + head_bytes.size() + payload.size());
    out.append(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(head_bytes.size());
    char lenb[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
    out.append(lenb, 4);
    out += head_bytes;
    out += payload;
    io::atomic_write(path, out);
}

Checkpoint load(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw ArtifactError("checkpoint: bad magic in " + path.string());
    const auto* lb = reinterpret_cast<const unsigned char*>(bytes.data() + 8);
    const std::uint32_t len = static_cast<std::uint32_t>(lb[0]) | (static_cast<std::uint32_t>(lb[1]) << 8) |
                              (static_cast<std::uint32_t>(lb[2]) << 16) |
                              (static_cast<std::uint32_t>(lb[3]) << 24);
    if (bytes.size() < 12 + static_cast<std::size_t>(len))
        throw ArtifactError("checkpoint: truncated header in " + path.string());

    json header;
    try {
        header = json::parse(bytes.substr(12, len));
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("checkpoint: header parse error: ") + e.what());
    }

    Checkpoint out;
    try {
        if (header.at("version").get<int>() != 1)
            throw ArtifactError("checkpoint: unsupported version");
        const std::string head = header.at("head").get<std::string>();
        model::HeadMode hm;
        if (head == "distribution")
            hm = model::HeadMode::distribution;
        else if (head == "point")
            hm = model::HeadMode::point;
        else
            throw ArtifactError("checkpoint: unknown head mode '" + head + "'");
        const model::EncoderConfig cfg = config::parse_model_config(header.at("model").dump());
        out.params = model::init_params(cfg, hm, 0);
        out.params.train_steps = header.at("train_steps").get<std::int64_t>();
        out.config_hash = parse_hex(header.at("config_hash").get<std::string>());

        const json& dir = header.at("tensors");
        const char* payload = bytes.data() + 12 + len;
        const std::size_t payload_size = bytes.size() - 12 - len;
        std::size_t idx = 0;
        model::visit_params(out.params, [&](const model::ParamRef& r) {
            if (idx >= dir.size()) throw ArtifactError("checkpoint: tensor directory too short");
            const json& e = dir.at(idx);
            if (e.at("name").get<std::string>() != r.name ||
                e.at("rows").get<std::size_t>() != r.rows ||
                e.at("cols").get<std::size_t>() != r.cols)
                throw ArtifactError("checkpoint: tensor mismatch at '" + r.name + "'");
            const std::size_t off = e.at("offset").get<std::size_t>();
            const std::size_t count = r.rows * r.cols;
            if (off + count * sizeof(double) > payload_size)
                throw ArtifactError("checkpoint: payload out of range at '" + r.name + "'");
            std::memcpy(r.data, payload + off, count * sizeof(double));
            ++idx;
        });
        if (idx != dir.size()) throw ArtifactError("checkpoint: tensor directory too long");
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("checkpoint: malformed header: ") + e.what());
    }
    return out;
}

}  // namespace curio::ckpt

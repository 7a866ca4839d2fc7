#include "curio/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

namespace curio::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw ArtifactError("read failed: " + path.string());
    return std::move(buf).str();
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    static std::atomic<std::uint64_t> counter{0};
    const auto parent = path.parent_path();
    std::error_code ec;
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);

    auto tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArtifactError("cannot create file: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out.good()) {
            out.close();
            std::filesystem::remove(tmp, ec);
            throw ArtifactError("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ArtifactError("rename failed for: " + path.string());
    }
}

}  // namespace curio::io

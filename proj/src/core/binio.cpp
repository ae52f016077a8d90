#include "core/binio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace qzero {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    // Write-then-rename: readers never observe a partial file.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::Io, "cannot open '" + tmp + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorCode::Io, "write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) fail(ErrorCode::Io, "rename to '" + path + "' failed: " + ec.message());
}

}  // namespace qzero

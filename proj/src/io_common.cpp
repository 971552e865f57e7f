#include "vadkd/io_common.hpp"

#include <fstream>

namespace vadkd::detail {

std::string read_file(const std::string& path, const char* format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string(format) + ": cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& buf, const char* format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(std::string(format) + ": cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(std::string(format) + ": write failed for " + path);
}

}  // namespace vadkd::detail

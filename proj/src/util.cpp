#include "visvar/util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "visvar/errors.hpp"

namespace visvar {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        int fd = ::open(tmp.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
        if (fd < 0) throw Error("cannot open for write: " + tmp.string());
        size_t off = 0;
        while (off < bytes.size()) {
            ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
            if (n < 0) {
                ::close(fd);
                throw Error("write failed: " + tmp.string());
            }
            off += static_cast<size_t>(n);
        }
        ::fsync(fd);
        ::close(fd);
    }
    std::filesystem::rename(tmp, path);
    durable_event();
}

void durable_event() {
    static std::atomic<long> counter{0};
    static const long limit = [] {
        const char* v = std::getenv("VISVAR_CRASH_AT_COMMIT");
        return v ? std::atol(v) : 0L;
    }();
    if (limit <= 0) return;
    if (counter.fetch_add(1) + 1 >= limit) {
        // Simulated power loss: no destructors, no flushes beyond what
        // already hit disk.
        ::_exit(137);
    }
}

std::string expand_env(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
            size_t end = s.find('}', i + 2);
            if (end != std::string_view::npos) {
                std::string name(s.substr(i + 2, end - i - 2));
                const char* v = std::getenv(name.c_str());
                if (v) out += v;
                i = end + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

}  // namespace visvar

#include "evseg/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evseg {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open for reading: " + path);
    return f;
}

void pgm_header(std::ostream& os, int w, int h, int maxval) {
    os << "P5\n" << w << " " << h << "\n" << maxval << "\n";
}

void read_pgm_header(std::istream& is, int& w, int& h, int& maxval) {
    std::string magic;
    is >> magic;
    if (magic != "P5") throw parse_error("not a binary PGM (P5) file");
    auto next_int = [&is]() {
        int c = is.peek();
        while (std::isspace(c) || c == '#') {
            if (c == '#') is.ignore(1 << 16, '\n');
            else is.get();
            c = is.peek();
        }
        int v;
        is >> v;
        return v;
    };
    w = next_int();
    h = next_int();
    maxval = next_int();
    is.get();  // single whitespace before payload
}

template <class T>
void write_le(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw artifact_error("unexpected end of file");
    return v;
}

}  // namespace

void write_pgm16(const std::string& path, int h, int w,
                 const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != h * w)
        throw dim_error("write_pgm16: size mismatch");
    auto f = open_out(path);
    pgm_header(f, w, h, 65535);
    for (double v : values) {
        const int q = static_cast<int>(std::lround(65535.0 * std::clamp(v, 0.0, 1.0)));
        f.put(static_cast<char>((q >> 8) & 0xff));
        f.put(static_cast<char>(q & 0xff));
    }
}

std::vector<double> read_pgm16(const std::string& path, int& h, int& w) {
    auto f = open_in(path);
    int maxval;
    read_pgm_header(f, w, h, maxval);
    if (maxval != 65535) throw parse_error("expected 16-bit PGM: " + path);
    std::vector<double> out(static_cast<size_t>(h) * w);
    for (double& v : out) {
        const int hi = f.get(), lo = f.get();
        if (hi < 0 || lo < 0) throw parse_error("truncated PGM: " + path);
        v = ((hi << 8) | lo) / 65535.0;
    }
    return out;
}

void write_pgm8(const std::string& path, int h, int w,
                const std::vector<int>& labels, int maxval) {
    if (static_cast<int>(labels.size()) != h * w)
        throw dim_error("write_pgm8: size mismatch");
    auto f = open_out(path);
    pgm_header(f, w, h, maxval);
    for (int v : labels) f.put(static_cast<char>(v & 0xff));
}

std::vector<int> read_pgm8(const std::string& path, int& h, int& w) {
    auto f = open_in(path);
    int maxval;
    read_pgm_header(f, w, h, maxval);
    if (maxval > 255) throw parse_error("expected 8-bit PGM: " + path);
    std::vector<int> out(static_cast<size_t>(h) * w);
    for (int& v : out) {
        const int c = f.get();
        if (c < 0) throw parse_error("truncated PGM: " + path);
        v = c;
    }
    return out;
}

void write_f32(const std::string& path, const Tensor& t) {
    auto f = open_out(path);
    f.write("EVSEG1", 6);
    write_le<uint32_t>(f, static_cast<uint32_t>(t.shape.size()));
    for (int e : t.shape) write_le<uint32_t>(f, static_cast<uint32_t>(e));
    for (double v : t.data) write_le<float>(f, static_cast<float>(v));
}

Tensor read_f32(const std::string& path) {
    auto f = open_in(path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, "EVSEG1", 6) != 0)
        throw artifact_error("bad f32 magic in " + path);
    const uint32_t ndim = read_le<uint32_t>(f);
    if (ndim == 0 || ndim > 4) throw artifact_error("bad f32 rank in " + path);
    std::vector<int> shape(ndim);
    for (auto& e : shape) e = static_cast<int>(read_le<uint32_t>(f));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = read_le<float>(f);
    return t;
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kCkptMagic[] = "EVSEGCKPT1\n";

std::string serialize_net_config(const NetConfig& c) {
    std::ostringstream os;
    os << "net.in_channels=" << c.in_channels << "\n"
       << "net.classes=" << c.classes << "\n"
       << "net.stage_channels=" << c.stage_channels[0] << ","
       << c.stage_channels[1] << "," << c.stage_channels[2] << "\n"
       << "net.kan_grid=" << c.kan_grid << "\n"
       << "net.kan_spline_order=" << c.kan_spline_order << "\n"
       << "net.kan_grid_extent=" << c.kan_grid_extent << "\n"
       << "net.use_euga=" << (c.use_euga ? 1 : 0) << "\n"
       << "net.seed=" << c.seed << "\n"
       << "euga.rank=" << c.euga.rank << "\n"
       << "euga.token_stride=" << c.euga.token_stride << "\n";
    return os.str();
}

NetConfig parse_net_config(const std::map<std::string, std::string>& m) {
    NetConfig c;
    c.in_channels = cfg_int(m, "net.in_channels", c.in_channels);
    c.classes = cfg_int(m, "net.classes", c.classes);
    if (auto it = m.find("net.stage_channels"); it != m.end()) {
        std::istringstream ss(it->second);
        c.stage_channels.clear();
        std::string tok;
        while (std::getline(ss, tok, ',')) c.stage_channels.push_back(std::stoi(tok));
    }
    c.kan_grid = cfg_int(m, "net.kan_grid", c.kan_grid);
    c.kan_spline_order = cfg_int(m, "net.kan_spline_order", c.kan_spline_order);
    c.kan_grid_extent = cfg_double(m, "net.kan_grid_extent", c.kan_grid_extent);
    c.use_euga = cfg_bool(m, "net.use_euga", c.use_euga);
    c.seed = static_cast<unsigned long long>(
        std::stoull(cfg_str(m, "net.seed", "0")));
    c.euga.rank = cfg_int(m, "euga.rank", c.euga.rank);
    c.euga.token_stride = cfg_int(m, "euga.token_stride", c.euga.token_stride);
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetParams& params) {
    auto f = open_out(path);
    f.write(kCkptMagic, sizeof(kCkptMagic) - 1);
    const std::string cfg = serialize_net_config(params.cfg);
    write_le<uint32_t>(f, static_cast<uint32_t>(cfg.size()));
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    for (auto& [name, t] : params.named()) {
        write_le<uint32_t>(f, static_cast<uint32_t>(t->shape.size()));
        for (int e : t->shape) write_le<uint32_t>(f, static_cast<uint32_t>(e));
        for (double v : t->data) write_le<double>(f, v);
    }
}

NetParams load_checkpoint(const std::string& path) {
    auto f = open_in(path);
    char magic[sizeof(kCkptMagic) - 1];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw artifact_error("bad checkpoint magic in " + path);
    const uint32_t cfg_len = read_le<uint32_t>(f);
    std::string cfg_text(cfg_len, '\0');
    f.read(cfg_text.data(), cfg_len);
    if (!f) throw artifact_error("truncated checkpoint config in " + path);

    NetParams params = NetParams::init(parse_net_config(parse_config_text(cfg_text)));
    for (auto& [name, t] : params.named()) {
        const uint32_t ndim = read_le<uint32_t>(f);
        if (ndim != t->shape.size())
            throw artifact_error("checkpoint/config mismatch at " + name);
        std::vector<int> shape(ndim);
        for (auto& e : shape) e = static_cast<int>(read_le<uint32_t>(f));
        if (shape != t->shape)
            throw artifact_error("checkpoint/config shape mismatch at " + name);
        for (double& v : t->data) v = read_le<double>(f);
    }
    return params;
}

// ---- config ----------------------------------------------------------------

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw parse_error("config line " + std::to_string(lineno) +
                              ": expected key=value");
        auto trim = [](std::string s) {
            const auto lo = s.find_first_not_of(" \t");
            if (lo == std::string::npos) return std::string();
            return s.substr(lo, s.find_last_not_of(" \t") - lo + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw parse_error("config line " + std::to_string(lineno) +
                              ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

double cfg_double(const std::map<std::string, std::string>& cfg,
                  const std::string& key, double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw parse_error("config field '" + key + "': not a number");
    }
}

int cfg_int(const std::map<std::string, std::string>& cfg,
            const std::string& key, int fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw parse_error("config field '" + key + "': not an integer");
    }
}

bool cfg_bool(const std::map<std::string, std::string>& cfg,
              const std::string& key, bool fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    throw parse_error("config field '" + key + "': not a boolean");
}

std::string cfg_str(const std::map<std::string, std::string>& cfg,
                    const std::string& key, const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto f = open_out(path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::string& path) {
    auto f = open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace evseg

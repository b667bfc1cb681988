#include "pdfnet/util.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;

namespace pdfnet::util {

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read '" + path + "'");

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 init failed");
    }
    std::array<char, 1 << 16> buf;
    while (f) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = f.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
            throw std::runtime_error("sha256 update failed");
        }
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha256 final failed");
    }
    std::string hex(static_cast<std::size_t>(len) * 2, '0');
    static const char* digits = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex[2 * i] = digits[digest[i] >> 4];
        hex[2 * i + 1] = digits[digest[i] & 0xF];
    }
    return hex;
}

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': '" + value + "' is not an integer");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': '" + value + "' is not a number");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw std::runtime_error("config key '" + key + "': '" + value + "' is not a boolean");
}

std::array<int, 5> parse_int5(const std::string& key, const std::string& value) {
    std::array<int, 5> out{};
    std::size_t pos = 0;
    for (int i = 0; i < 5; ++i) {
        const std::size_t comma = value.find(',', pos);
        const std::string piece =
            strip(comma == std::string::npos ? value.substr(pos) : value.substr(pos, comma - pos));
        out[static_cast<std::size_t>(i)] = static_cast<int>(parse_int(key, piece));
        if (i < 4) {
            if (comma == std::string::npos) {
                throw std::runtime_error("config key '" + key + "': expected 5 comma-separated integers");
            }
            pos = comma + 1;
        } else if (comma != std::string::npos) {
            throw std::runtime_error("config key '" + key + "': expected 5 comma-separated integers");
        }
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << content;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

void write_manifest(const std::string& dir, const std::vector<std::string>& artifacts) {
    nlohmann::json entries = nlohmann::json::array();
    for (const std::string& rel : artifacts) {
        const fs::path full = fs::path(dir) / rel;
        entries.push_back({{"path", rel},
                           {"bytes", static_cast<std::uint64_t>(fs::file_size(full))},
                           {"sha256", sha256_file(full.string())}});
    }
    nlohmann::json manifest = {{"artifacts", entries}};
    write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace pdfnet::util

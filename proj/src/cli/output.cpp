#include "telic/cli.hpp"

#include "telic/error.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <unistd.h>

namespace telic::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw NumericalError("sha256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw IoError("error writing " + path.string());
}

} // namespace

json write_outputs(const RunConfig& config, const BenchResult& result, const fs::path& out, double wall_seconds) {
    json manifest{{"tool", "telic"},
                  {"version", kVersion},
                  {"schema_version", kSchemaVersion},
                  {"bench", config.bench},
                  {"seed", config.seed},
                  {"units", config.units},
                  {"config", config.echo},
                  {"artifacts", json::array()},
                  {"wall_time_seconds", wall_seconds},
                  {"status", result.status},
                  {"warnings", result.warnings}};
    for (const auto& a : result.artifacts)
        manifest["artifacts"].push_back({{"name", a.name}, {"sha256", sha256_hex(a.content)}, {"bytes", a.content.size()}});

    const fs::path target = fs::absolute(out).lexically_normal();
    const fs::path parent = target.has_filename() ? target.parent_path() : target.parent_path().parent_path();
    const std::string leaf = target.has_filename() ? target.filename().string() : target.parent_path().filename().string();
    const fs::path tmp = parent / ("." + leaf + ".tmp-" + std::to_string(::getpid()));
    const fs::path dest = parent / leaf;

    std::error_code ec;
    try {
        fs::create_directories(parent);
        fs::remove_all(tmp, ec);
        fs::create_directory(tmp);
        for (const auto& a : result.artifacts) write_file(tmp / a.name, a.content);
        write_file(tmp / "manifest.json", manifest.dump(2) + "\n");

        if (!fs::exists(dest)) {
            fs::rename(tmp, dest);
        } else {
            if (!fs::is_directory(dest)) throw IoError("output path exists and is not a directory: " + dest.string());
            for (const auto& a : result.artifacts) fs::rename(tmp / a.name, dest / a.name);
            fs::rename(tmp / "manifest.json", dest / "manifest.json");
            fs::remove_all(tmp);
        }
    } catch (const fs::filesystem_error& e) {
        fs::remove_all(tmp, ec);
        throw IoError(std::string("writing outputs failed: ") + e.what());
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }
    return manifest;
}

} // namespace telic::cli

// manifest.hpp
// Run manifests: the full configuration, build version, wall time and a
// SHA-256 for every output file.

#pragma once

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgol {

inline constexpr const char* version_string = "0.1.0";

inline std::string sha256_hex(const std::string& bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1)
        throw std::runtime_error("sha256 initialisation failed");
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw std::runtime_error("sha256 finalisation failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

struct OutputFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

// Writes files into one output directory and remembers their hashes.
class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw std::runtime_error("cannot create output directory " + dir_.string());
    }

    const std::filesystem::path& directory() const noexcept { return dir_; }

    void write(const std::string& name, const std::string& contents)
    {
        const auto path = dir_ / name;
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot write " + path.string());
        os << contents;
        os.close();
        if (!os)
            throw std::runtime_error("error while writing " + path.string());
        files_.push_back({name, sha256_hex(contents), contents.size()});
    }

    template <typename Table>
    void write_table(const std::string& name, const Table& table)
    {
        std::ostringstream os;
        table.write(os);
        write(name, os.str());
    }

    const std::vector<OutputFile>& files() const noexcept { return files_; }

    void write_manifest(nlohmann::json manifest)
    {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& f : files_)
            list.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        manifest["files"] = std::move(list);
        const auto path = dir_ / "manifest.json";
        std::ofstream os(path, std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot write " + path.string());
        os << manifest.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    std::vector<OutputFile> files_;
};

} // namespace qgol

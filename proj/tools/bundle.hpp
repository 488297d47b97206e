#pragma once

// Decomposition bundle: a directory holding
//   manifest.json    method, tau, rank, gamma, shapes, version, input digest
//   eigenvalues.csv  index,re,im
//   amplitudes.csv   index,re,im,active
//   modes.csv        one row per embedded coordinate, re_k,im_k per mode
//   config.txt       the effective run configuration
// Everything is plain text so other languages can read it back.

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "circdmd/circdmd.hpp"
#include "run_config.hpp"

namespace circdmd::cli {

namespace fs = std::filesystem;

inline constexpr int kBundleFormat = 1;

/// A bundle directory that is missing files or does not parse.
struct BundleError : Error {
    using Error::Error;
};

/// Refusal to overwrite a bundle fitted on different input.
struct ProvenanceError : Error {
    using Error::Error;
};

/// SHA-256 of a file's bytes as lowercase hex.
inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-256 unavailable");
    }
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

struct Bundle {
    DynamicSpectrum spectrum;
    double delta_t = 1.0 / 12.0;
    std::optional<Index> split_index;
    std::string input_path;
    std::string input_digest;
    Layout layout = Layout::SensorsAsRows;
    std::string software_version = CIRCDMD_VERSION;
};

namespace detail {

inline std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::size_t expected_cols) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (circdmd::detail::trim(line).empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> row;
        for (auto cell : circdmd::detail::split_cells(line)) {
            const auto v = circdmd::detail::parse_number(cell);
            if (!v) throw BundleError(path.string() + ": bad number '" + std::string(cell) + "'");
            row.push_back(*v);
        }
        if (row.size() != expected_cols)
            throw BundleError(path.string() + ": expected " + std::to_string(expected_cols) + " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

}  // namespace detail

/// Reads only the manifest's input digest, if a bundle exists in `dir`.
inline std::optional<std::string> existing_digest(const fs::path& dir) {
    const auto manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) return std::nullopt;
    std::ifstream in(manifest);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("input_digest")) return std::string{};
    return j["input_digest"].get<std::string>();
}

/// Writes the bundle. An existing bundle fitted on different input is only
/// replaced when `force` is set.
inline void write_bundle(const fs::path& dir, const Bundle& b, const RunConfig& cfg, bool force) {
    if (auto old = existing_digest(dir); old && *old != b.input_digest && !force)
        throw ProvenanceError(dir.string() + " holds a bundle fitted on different input (digest " +
                              (old->empty() ? std::string("unreadable") : old->substr(0, 12)) +
                              "...); rerun with --force to replace it");
    fs::create_directories(dir);
    fs::remove(dir / "manifest.json");
    const auto& s = b.spectrum;
    using circdmd::detail::format_double;

    nlohmann::json m;
    m["format"] = "circdmd-bundle";
    m["format_version"] = kBundleFormat;
    m["software_version"] = b.software_version;
    m["method"] = std::string(method_name(s.meta.method));
    m["tau"] = s.meta.tau;
    m["rank"] = s.size();
    m["svd_rank"] = s.meta.rank;
    m["gamma"] = s.meta.gamma;
    m["n"] = s.meta.n;
    m["source_t"] = s.meta.source_t;
    m["delta_t"] = b.delta_t;
    m["mode_flavor"] = s.meta.flavor == ModeFlavor::Exact ? "exact" : "projected";
    m["split_index"] = b.split_index ? nlohmann::json(*b.split_index) : nlohmann::json(nullptr);
    m["layout"] = b.layout == Layout::SensorsAsRows ? "rows" : "cols";
    m["input_path"] = b.input_path;
    m["input_digest"] = b.input_digest;
    Index nonzero = 0;
    for (bool a : s.active) nonzero += a;
    m["nonzero_count"] = nonzero;

    std::ostringstream eig, amp, modes;
    eig << "index,re,im\n";
    amp << "index,re,im,active\n";
    for (Index i = 0; i < s.size(); ++i) {
        eig << i << ',' << format_double(s.eigenvalues(i).real()) << ',' << format_double(s.eigenvalues(i).imag())
            << '\n';
        amp << i << ',' << format_double(s.amplitudes(i).real()) << ',' << format_double(s.amplitudes(i).imag())
            << ',' << (s.active.empty() || s.active[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
    const CMatrix& phi = s.modes();
    for (Index k = 0; k < phi.cols(); ++k) modes << (k ? "," : "") << "re_" << k << ",im_" << k;
    modes << '\n';
    for (Index r = 0; r < phi.rows(); ++r) {
        for (Index k = 0; k < phi.cols(); ++k)
            modes << (k ? "," : "") << format_double(phi(r, k).real()) << ',' << format_double(phi(r, k).imag());
        modes << '\n';
    }

    detail::write_text(dir / "eigenvalues.csv", eig.str());
    detail::write_text(dir / "amplitudes.csv", amp.str());
    detail::write_text(dir / "modes.csv", modes.str());
    detail::write_text(dir / "config.txt", cfg.to_text());
    // manifest last: a directory with a manifest is a complete bundle
    detail::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

inline Bundle read_bundle(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw BundleError("no bundle at " + dir.string() + " (manifest.json missing)");
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw BundleError(std::string("manifest.json: ") + e.what());
    }
    if (m.value("format", "") != "circdmd-bundle") throw BundleError("manifest.json is not a circdmd bundle");
    if (m.value("format_version", 0) != kBundleFormat)
        throw BundleError("unsupported bundle format version " + std::to_string(m.value("format_version", 0)));

    Bundle b;
    auto& s = b.spectrum;
    try {
        s.meta.method = parse_method(m.at("method").get<std::string>());
        s.meta.tau = m.at("tau").get<Index>();
        s.meta.rank = m.value("svd_rank", Index{0});
        s.meta.gamma = m.at("gamma").get<double>();
        s.meta.n = m.at("n").get<Index>();
        s.meta.source_t = m.at("source_t").get<Index>();
        s.meta.flavor = m.at("mode_flavor").get<std::string>() == "exact" ? ModeFlavor::Exact : ModeFlavor::Projected;
        b.delta_t = m.at("delta_t").get<double>();
        if (!m.at("split_index").is_null()) b.split_index = m["split_index"].get<Index>();
        b.layout = m.value("layout", "rows") == "rows" ? Layout::SensorsAsRows : Layout::SensorsAsColumns;
        b.input_path = m.value("input_path", "");
        b.input_digest = m.value("input_digest", "");
        b.software_version = m.value("software_version", "");
    } catch (const nlohmann::json::exception& e) {
        throw BundleError(std::string("manifest.json: ") + e.what());
    }
    const auto r = static_cast<std::size_t>(m.at("rank").get<Index>());

    const auto eig = detail::read_numeric_csv(dir / "eigenvalues.csv", 3);
    const auto amp = detail::read_numeric_csv(dir / "amplitudes.csv", 4);
    const auto modes = detail::read_numeric_csv(dir / "modes.csv", 2 * r);
    if (eig.size() != r || amp.size() != r) throw BundleError("bundle rank does not match its CSV files");
    const auto rows = static_cast<std::size_t>(s.meta.n * s.meta.tau);
    if (modes.size() != rows) throw BundleError("modes.csv has the wrong number of rows");

    const auto ri = static_cast<Index>(r);
    s.eigenvalues.resize(ri);
    s.amplitudes.resize(ri);
    s.active.assign(r, true);
    for (std::size_t i = 0; i < r; ++i) {
        s.eigenvalues(static_cast<Index>(i)) = Complex(eig[i][1], eig[i][2]);
        s.amplitudes(static_cast<Index>(i)) = Complex(amp[i][1], amp[i][2]);
        s.active[i] = amp[i][3] != 0.0;
    }
    CMatrix phi(static_cast<Index>(rows), ri);
    for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t k = 0; k < r; ++k)
            phi(static_cast<Index>(row), static_cast<Index>(k)) = Complex(modes[row][2 * k], modes[row][2 * k + 1]);
    if (s.meta.flavor == ModeFlavor::Exact)
        s.modes_exact = std::move(phi);
    else
        s.modes_projected = std::move(phi);
    return b;
}

}  // namespace circdmd::cli

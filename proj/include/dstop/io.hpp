#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dstop/boundary.hpp"
#include "dstop/montecarlo.hpp"
#include "dstop/posterior.hpp"
#include "dstop/solver.hpp"

namespace dstop {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// FNV-1a 64-bit over raw bytes; used to fingerprint artifact files.
std::uint64_t fnv1a64(std::string_view bytes);

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

/// Columns: t,pi,v,g,stop. Fixed %.17g float formatting, so identical
/// surfaces serialize to identical bytes.
void write_surface_csv(const std::filesystem::path& path, const ValueSurface& s);

/// Little-endian container documented byte-exactly in docs/formats.md.
void write_surface_binary(const std::filesystem::path& path, const ValueSurface& s);
ValueSurface read_surface_binary(const std::filesystem::path& path);

/// Columns: t,b,b_check,method,residual. The transform and residual
/// columns print nan when not supplied; the terminal knot is included
/// with method "terminal".
std::string boundary_csv_string(const Boundary& b,
                                const std::vector<double>* residuals = nullptr);
void write_boundary_csv(const std::filesystem::path& path, const Boundary& b,
                        const std::vector<double>* residuals = nullptr);

/// Columns: sample,t,x,pi,theta,deadline_hit (deadline <= t at the node).
void write_paths_csv(const std::filesystem::path& path,
                     const std::vector<PathSample>& paths);

struct StatsMetadata {
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  double dt = 0.0;
  std::uint64_t boundary_hash = 0;
};

nlohmann::json stats_to_json(const PolicyStats& s, const StatsMetadata& meta);
void write_stats_json(const std::filesystem::path& path, const PolicyStats& s,
                      const StatsMetadata& meta);

/// Dependency-free 800x600 boundary plot; fixed coordinate formatting and
/// no timestamps, so regenerating yields identical bytes.
std::string boundary_svg(const Boundary& b, const std::string& title);

}  // namespace dstop

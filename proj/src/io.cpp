#include "dstop/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "binary surface format assumes a little-endian host");

namespace dstop {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'P', 'S', 'U', 'R', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <typename T>
void append_pod(std::string& out, T v) {
  append_raw(out, &v, sizeof(v));
}

template <typename T>
T read_pod(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw IoError("surface file truncated");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void append_doubles(std::string& out, const std::vector<double>& v) {
  append_raw(out, v.data(), v.size() * sizeof(double));
}

std::vector<double> read_doubles(const std::string& buf, std::size_t& off,
                                 std::size_t count) {
  if (off + count * sizeof(double) > buf.size()) throw IoError("surface file truncated");
  std::vector<double> v(count);
  std::memcpy(v.data(), buf.data() + off, count * sizeof(double));
  off += count * sizeof(double);
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return out;
}

void write_surface_csv(const std::filesystem::path& path, const ValueSurface& s) {
  std::string out = "t,pi,v,g,stop\n";
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    for (std::size_t j = 0; j < s.pi_grid.size(); ++j) {
      out += fmt(s.t_grid[i]);
      out += ',';
      out += fmt(s.pi_grid[j]);
      out += ',';
      out += fmt(s.v(i, j));
      out += ',';
      out += fmt(s.g(i, j));
      out += ',';
      out += s.stopped(i, j) ? '1' : '0';
      out += '\n';
    }
  }
  write_text(path, out);
}

void write_surface_binary(const std::filesystem::path& path, const ValueSurface& s) {
  std::string out;
  const auto nt = static_cast<std::uint32_t>(s.t_grid.size() - 1);
  const auto npi = static_cast<std::uint32_t>(s.pi_grid.size() - 2);
  out.reserve(48 + (s.t_grid.size() + s.pi_grid.size() + 2 * s.v.data.size()) * 8 +
              s.stop.size());
  append_raw(out, kMagic, sizeof(kMagic));
  append_pod(out, kFormatVersion);
  append_pod(out, nt);
  append_pod(out, npi);
  std::uint32_t flags = 0;
  if (s.has_terminal_row) flags |= 1u;
  if (s.horizon_clipped) flags |= 2u;
  append_pod(out, flags);
  append_pod(out, s.horizon);
  append_pod(out, s.requested_horizon);
  append_pod(out, s.contact_tol);
  append_doubles(out, s.t_grid);
  append_doubles(out, s.pi_grid);
  append_doubles(out, s.v.data);
  append_doubles(out, s.g.data);
  append_raw(out, s.stop.data(), s.stop.size());
  write_text(path, out);
}

ValueSurface read_surface_binary(const std::filesystem::path& path) {
  const std::string buf = read_text(path);
  std::size_t off = 0;
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a surface file: " + path.string());
  off = sizeof(kMagic);
  if (read_pod<std::uint32_t>(buf, off) != kFormatVersion)
    throw IoError("unsupported surface format version");
  const auto nt = read_pod<std::uint32_t>(buf, off);
  const auto npi = read_pod<std::uint32_t>(buf, off);
  const auto flags = read_pod<std::uint32_t>(buf, off);

  ValueSurface s;
  s.has_terminal_row = (flags & 1u) != 0;
  s.horizon_clipped = (flags & 2u) != 0;
  s.horizon = read_pod<double>(buf, off);
  s.requested_horizon = read_pod<double>(buf, off);
  s.contact_tol = read_pod<double>(buf, off);
  const std::size_t rows = static_cast<std::size_t>(nt) + 1;
  const std::size_t cols = static_cast<std::size_t>(npi) + 2;
  s.t_grid = read_doubles(buf, off, rows);
  s.pi_grid = read_doubles(buf, off, cols);
  s.v = Matrix(rows, cols);
  s.g = Matrix(rows, cols);
  s.v.data = read_doubles(buf, off, rows * cols);
  s.g.data = read_doubles(buf, off, rows * cols);
  if (off + rows * cols > buf.size()) throw IoError("surface file truncated");
  s.stop.resize(rows * cols);
  std::memcpy(s.stop.data(), buf.data() + off, rows * cols);
  off += rows * cols;
  if (off != buf.size()) throw IoError("surface file has trailing bytes");
  return s;
}

std::string boundary_csv_string(const Boundary& b, const std::vector<double>* residuals) {
  if (residuals && residuals->size() != b.t_grid.size())
    throw IoError("boundary residual column length mismatch");
  std::string out = "t,b,b_check,method,residual\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < b.t_grid.size(); ++i) {
    out += fmt(b.t_grid[i]);
    out += ',';
    out += fmt(b.level[i]);
    out += ',';
    out += fmt(b.has_transform ? b.transformed[i] : nan);
    out += ',';
    out += to_string(b.method[i]);
    out += ',';
    out += fmt(residuals ? (*residuals)[i] : nan);
    out += '\n';
  }
  if (b.has_terminal) {
    out += fmt(b.horizon);
    out += ',';
    out += fmt(b.terminal_level);
    out += ',';
    // log-odds transform is exactly zero at the terminal gain root
    out += fmt(b.has_transform ? 0.0 : nan);
    out += ",terminal,";
    out += fmt(nan);
    out += '\n';
  }
  return out;
}

void write_boundary_csv(const std::filesystem::path& path, const Boundary& b,
                        const std::vector<double>* residuals) {
  write_text(path, boundary_csv_string(b, residuals));
}

void write_paths_csv(const std::filesystem::path& path,
                     const std::vector<PathSample>& paths) {
  std::string out = "sample,t,x,pi,theta,deadline_hit\n";
  for (std::size_t s = 0; s < paths.size(); ++s) {
    const PathSample& p = paths[s];
    for (std::size_t k = 0; k < p.t.size(); ++k) {
      out += std::to_string(s);
      out += ',';
      out += fmt(p.t[k]);
      out += ',';
      out += fmt(p.x[k]);
      out += ',';
      out += fmt(p.pi[k]);
      out += ',';
      out += p.theta ? '1' : '0';
      out += ',';
      out += (p.deadline && *p.deadline <= p.t[k]) ? '1' : '0';
      out += '\n';
    }
  }
  write_text(path, out);
}

nlohmann::json stats_to_json(const PolicyStats& s, const StatsMetadata& meta) {
  nlohmann::json j;
  j["mean_payoff"] = s.mean_payoff;
  j["std_error"] = s.std_error;
  j["n"] = s.n;
  j["stop_time_quantiles"] = {{"q10", s.q10}, {"q50", s.q50}, {"q90", s.q90}};
  j["fraction_stopped_before_deadline"] = s.fraction_stopped_before_deadline;
  j["fraction_decide_one"] = s.fraction_decide_one;
  j["mean_given_high"] = s.mean_given_high;
  j["mean_given_low"] = s.mean_given_low;
  j["n_high"] = s.n_high;
  j["metadata"] = {{"seed", meta.seed},
                   {"n", meta.n},
                   {"dt", meta.dt},
                   {"boundary_hash", meta.boundary_hash}};
  return j;
}

void write_stats_json(const std::filesystem::path& path, const PolicyStats& s,
                      const StatsMetadata& meta) {
  write_text(path, stats_to_json(s, meta).dump(2) + "\n");
}

std::string boundary_svg(const Boundary& b, const std::string& title) {
  constexpr double kW = 800, kH = 600;
  constexpr double kLeft = 70, kRight = 20, kTop = 45, kBottom = 55;
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  const double T = b.horizon > 0.0 ? b.horizon : (b.t_grid.empty() ? 1.0 : b.t_grid.back());

  auto px = [&](double t) { return x0 + (x1 - x0) * (T > 0 ? t / T : 0.0); };
  auto py = [&](double lvl) { return y0 + (y1 - y0) * lvl; };
  auto coord = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto tick_label = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
       "viewBox=\"0 0 800 600\">\n";
  s += "<rect width=\"800\" height=\"600\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"400\" y=\"26\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"18\" fill=\"#222222\">" + title + "</text>\n";

  // gridlines and ticks
  for (int k = 0; k <= 4; ++k) {
    const double lvl = 0.25 * k;
    const double y = py(lvl);
    s += "<line x1=\"" + coord(x0) + "\" y1=\"" + coord(y) + "\" x2=\"" + coord(x1) +
         "\" y2=\"" + coord(y) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    s += "<text x=\"" + coord(x0 - 8) + "\" y=\"" + coord(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#555555\">" + tick_label(lvl) + "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double t = T * 0.25 * k;
    const double x = px(t);
    s += "<line x1=\"" + coord(x) + "\" y1=\"" + coord(y0) + "\" x2=\"" + coord(x) +
         "\" y2=\"" + coord(y0 + 5) + "\" stroke=\"#555555\" stroke-width=\"1\"/>\n";
    s += "<text x=\"" + coord(x) + "\" y=\"" + coord(y0 + 20) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#555555\">" + tick_label(t) + "</text>\n";
  }
  s += "<line x1=\"" + coord(x0) + "\" y1=\"" + coord(y0) + "\" x2=\"" + coord(x1) +
       "\" y2=\"" + coord(y0) + "\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n";
  s += "<line x1=\"" + coord(x0) + "\" y1=\"" + coord(y0) + "\" x2=\"" + coord(x0) +
       "\" y2=\"" + coord(y1) + "\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n";
  s += "<text x=\"" + coord((x0 + x1) / 2) + "\" y=\"" + coord(kH - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
       "fill=\"#222222\">t</text>\n";
  s += "<text x=\"18\" y=\"" + coord((y0 + y1) / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
       "fill=\"#222222\" transform=\"rotate(-90 18 " + coord((y0 + y1) / 2) +
       ")\">b(t)</text>\n";

  s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < b.t_grid.size(); ++i) {
    if (i) s += ' ';
    s += coord(px(b.t_grid[i])) + ',' + coord(py(b.level[i]));
  }
  if (b.has_terminal)
    s += ' ' + coord(px(b.horizon)) + ',' + coord(py(b.terminal_level));
  s += "\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace dstop

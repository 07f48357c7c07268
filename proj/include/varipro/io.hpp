#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "varipro/errors.hpp"
#include "varipro/grid.hpp"
#include "varipro/operators.hpp"

namespace varipro {

// PGM images are quantized to maxval 255 with an affine scale recorded in a
// comment line "# scale <lo> <hi>": pixel p encodes lo + (p/255)*(hi-lo).
// Readers without the comment get values in [0,1].

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline int quantize(double v, double lo, double hi) {
  if (hi <= lo) return 0;
  const double t = (v - lo) / (hi - lo);
  const int q = static_cast<int>(std::lround(t * 255.0));
  return std::clamp(q, 0, 255);
}

}  // namespace detail

inline void write_pgm(const GridImage& img, const std::string& path, bool binary = false,
                      std::optional<std::pair<double, double>> range = std::nullopt) {
  double lo = 0.0, hi = 1.0;
  if (range) {
    lo = range->first;
    hi = range->second;
  } else {
    const auto [mn, mx] = std::minmax_element(img.data.begin(), img.data.end());
    lo = *mn;
    hi = *mx;
    if (hi <= lo) hi = lo + 1.0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot open " + path);
  out << (binary ? "P5" : "P2") << "\n";
  out << "# scale " << detail::format_double(lo) << " " << detail::format_double(hi) << "\n";
  out << img.width << " " << img.height << "\n255\n";
  if (binary) {
    std::string bytes(static_cast<size_t>(img.size()), '\0');
    for (int k = 0; k < img.size(); ++k)
      bytes[static_cast<size_t>(k)] = static_cast<char>(detail::quantize(img.data[static_cast<size_t>(k)], lo, hi));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    for (int i = 0; i < img.height; ++i) {
      for (int j = 0; j < img.width; ++j) {
        out << detail::quantize(img.at(i, j), lo, hi);
        out << (j + 1 == img.width ? '\n' : ' ');
      }
    }
  }
  if (!out) throw IoError("write_pgm: write failed for " + path);
}

inline GridImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw IoError("read_pgm: not a P2/P5 file: " + path);
  double lo = 0.0, hi = 1.0;
  bool have_scale = false;
  auto skip_ws_and_comments = [&]() {
    while (true) {
      const int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
        std::istringstream ls(line);
        std::string hash, tag;
        ls >> hash >> tag;
        if (tag == "scale") {
          ls >> lo >> hi;
          have_scale = true;
        }
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
  };
  skip_ws_and_comments();
  int w = 0, h = 0, maxval = 0;
  in >> w;
  skip_ws_and_comments();
  in >> h;
  skip_ws_and_comments();
  in >> maxval;
  if (w <= 0 || h <= 0 || maxval <= 0) throw IoError("read_pgm: bad header in " + path);
  GridImage img(w, h, 0.0);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::string bytes(static_cast<size_t>(w) * h, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError("read_pgm: truncated raster in " + path);
    for (int k = 0; k < img.size(); ++k)
      img.data[static_cast<size_t>(k)] = static_cast<double>(static_cast<unsigned char>(bytes[static_cast<size_t>(k)]));
  } else {
    for (int k = 0; k < img.size(); ++k) {
      skip_ws_and_comments();
      int v = 0;
      if (!(in >> v)) throw IoError("read_pgm: truncated raster in " + path);
      img.data[static_cast<size_t>(k)] = static_cast<double>(v);
    }
  }
  const double scale = have_scale ? (hi - lo) / maxval : 1.0 / maxval;
  const double shift = have_scale ? lo : 0.0;
  for (auto& v : img.data) v = shift + v * scale;
  return img;
}

// CSV: one line per image row, comma separator, '.' decimal point,
// full double precision.

inline void write_csv(const GridImage& img, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open " + path);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      out << detail::format_double(img.at(i, j));
      out << (j + 1 == img.width ? '\n' : ',');
    }
  }
  if (!out) throw IoError("write_csv: write failed for " + path);
}

inline GridImage read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open " + path);
  std::vector<double> values;
  int width = -1, height = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int count = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    if (width < 0)
      width = count;
    else if (count != width)
      throw IoError("read_csv: ragged rows in " + path);
    ++height;
  }
  if (width <= 0 || height <= 0) throw IoError("read_csv: empty file " + path);
  GridImage img(width, height, 0.0);
  img.data = std::move(values);
  return img;
}

// Sinogram CSV: header "angles=<n>,offsets=<m>,smax=<v>", then data rows
// angle-major (one row per angle).

inline void write_sinogram_csv(const Sinogram& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_sinogram_csv: cannot open " + path);
  out << "angles=" << s.n_angles << ",offsets=" << s.n_offsets << ",smax="
      << detail::format_double(s.s_max) << "\n";
  for (int a = 0; a < s.n_angles; ++a) {
    for (int o = 0; o < s.n_offsets; ++o) {
      out << detail::format_double(s.data[static_cast<size_t>(a) * s.n_offsets + o]);
      out << (o + 1 == s.n_offsets ? '\n' : ',');
    }
  }
  if (!out) throw IoError("write_sinogram_csv: write failed for " + path);
}

inline Sinogram read_sinogram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_sinogram_csv: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("read_sinogram_csv: empty file " + path);
  int n_angles = 0, n_offsets = 0;
  double s_max = 0.0;
  if (std::sscanf(header.c_str(), "angles=%d,offsets=%d,smax=%lf", &n_angles, &n_offsets, &s_max) != 3)
    throw IoError("read_sinogram_csv: bad header in " + path);
  Sinogram s = make_sinogram_geometry(n_angles, n_offsets, s_max);
  std::string line;
  size_t idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      if (idx >= s.data.size()) throw IoError("read_sinogram_csv: too many values in " + path);
      s.data[idx++] = std::stod(cell);
    }
  }
  if (idx != s.data.size()) throw IoError("read_sinogram_csv: truncated data in " + path);
  return s;
}

/// Loads every .pgm/.csv image in a directory, sorted by filename;
/// used for prototype sets.
inline std::vector<GridImage> load_image_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".csv") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<GridImage> images;
  images.reserve(paths.size());
  for (const auto& p : paths) {
    if (p.extension() == ".pgm")
      images.push_back(read_pgm(p.string()));
    else
      images.push_back(read_csv(p.string()));
  }
  return images;
}

}  // namespace varipro

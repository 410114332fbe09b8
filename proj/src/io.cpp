#include "slt/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace slt {

std::string format_double(double x) {
  // shortest representation that round-trips
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write: " + path);
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  std::ostringstream out;
  for (int j = 0; j < d.obs_dim; ++j) {
    if (j) out << ',';
    out << 'x' << (j + 1);
  }
  out << '\n';
  for (int i = 0; i < d.n; ++i) {
    const double* row = d.row(i);
    for (int j = 0; j < d.obs_dim; ++j) {
      if (j) out << ',';
      out << format_double(row[j]);
    }
    out << '\n';
  }
  write_text_file(path, out.str());

  nlohmann::json m;
  m["model"] = d.model;
  m["n"] = d.n;
  m["seed"] = d.seed;
  write_text_file(path + ".manifest.json", m.dump(2) + "\n");
}

Dataset read_dataset_csv(const std::string& path) {
  std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset csv: " + path);
  int obs_dim = 1;
  for (char c : line)
    if (c == ',') ++obs_dim;
  Dataset d;
  d.obs_dim = obs_dim;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int got = 0;
    while (std::getline(ls, cell, ',')) {
      d.values.push_back(std::stod(cell));
      ++got;
    }
    if (got != obs_dim) throw std::runtime_error("ragged dataset csv: " + path);
    ++d.n;
  }
  std::ifstream mf(path + ".manifest.json");
  if (mf) {
    nlohmann::json m = nlohmann::json::parse(mf);
    d.model = m.value("model", "");
    d.seed = m.value("seed", std::uint64_t{0});
  }
  return d;
}

std::string fnv1a_hex(const std::string& content) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

}  // namespace slt

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "daavm/ergm.hpp"
#include "daavm/param.hpp"
#include "daavm/pointproc.hpp"
#include "daavm/potts.hpp"
#include "daavm/samplers.hpp"
#include "daavm/sir.hpp"
#include "daavm/surrogate.hpp"

namespace daavm {

using json = nlohmann::json;

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace detail

// Lattice text format: header "m q" (square) or "rows cols q", then one row
// of space-separated states (1-based) per line.
inline void save_lattice(const PottsLattice& x, const std::string& path) {
  auto f = detail::open_out(path);
  if (x.rows == x.cols)
    f << x.rows << ' ' << x.q << '\n';
  else
    f << x.rows << ' ' << x.cols << ' ' << x.q << '\n';
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) f << (c ? " " : "") << x.at(r, c);
    f << '\n';
  }
}

inline PottsLattice load_lattice(const std::string& path) {
  auto f = detail::open_in(path);
  std::string header;
  if (!std::getline(f, header)) throw std::runtime_error("lattice file is empty: " + path);
  std::istringstream hs(header);
  std::vector<int> h;
  for (int v; hs >> v;) h.push_back(v);
  int rows, cols, q;
  if (h.size() == 2) {
    rows = cols = h[0];
    q = h[1];
  } else if (h.size() == 3) {
    rows = h[0];
    cols = h[1];
    q = h[2];
  } else {
    throw std::runtime_error("lattice header must be 'm q' or 'rows cols q': " + path);
  }
  PottsLattice x(rows, cols, q, true);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!(f >> x.at(r, c))) throw std::runtime_error("lattice file truncated: " + path);
  x.validate();
  return x;
}

// Point pattern CSV: "# window x0 y0 x1 y1" comment, then "x,y" header and
// one point per line.
inline void save_points(const PointPattern& x, const std::string& path) {
  auto f = detail::open_out(path);
  f.precision(17);
  f << "# window " << x.win.x0 << ' ' << x.win.y0 << ' ' << x.win.x1 << ' ' << x.win.y1 << '\n';
  f << "x,y\n";
  for (std::size_t i = 0; i < x.size(); ++i) f << x.xs[i] << ',' << x.ys[i] << '\n';
}

inline PointPattern load_points(const std::string& path) {
  auto f = detail::open_in(path);
  PointPattern x;
  bool have_window = false;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tag;
      if (ss >> tag && tag == "window") {
        if (!(ss >> x.win.x0 >> x.win.y0 >> x.win.x1 >> x.win.y1))
          throw std::runtime_error("bad window comment: " + path);
        have_window = true;
      }
      continue;
    }
    if (line.rfind("x,", 0) == 0) continue;  // header
    const auto fields = detail::split_csv(line);
    if (fields.size() != 2) throw std::runtime_error("point rows need two fields: " + path);
    x.xs.push_back(std::stod(fields[0]));
    x.ys.push_back(std::stod(fields[1]));
  }
  if (!have_window) throw std::runtime_error("point file lacks a '# window' line: " + path);
  x.validate();
  return x;
}

// Network: edge CSV "i,j" (0-based, i < j not required) plus attribute CSV
// "node,grade,sex".
inline void save_network(const Network& x, const std::string& edge_path,
                         const std::string& attr_path) {
  auto fe = detail::open_out(edge_path);
  fe << "i,j\n";
  for (int i = 0; i < x.n; ++i)
    for (int j = i + 1; j < x.n; ++j)
      if (x.edge(i, j)) fe << i << ',' << j << '\n';
  auto fa = detail::open_out(attr_path);
  fa << "node,grade,sex\n";
  for (int i = 0; i < x.n; ++i) fa << i << ',' << x.grade[i] << ',' << x.sex[i] << '\n';
}

inline Network load_network(const std::string& edge_path, const std::string& attr_path) {
  auto fa = detail::open_in(attr_path);
  std::string line;
  std::getline(fa, line);  // header
  std::vector<int> grade, sex;
  while (std::getline(fa, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 3) throw std::runtime_error("attribute rows need three fields");
    const int node = std::stoi(fields[0]);
    if (node != static_cast<int>(grade.size()))
      throw std::runtime_error("attribute nodes must be 0..n-1 in order");
    grade.push_back(std::stoi(fields[1]));
    sex.push_back(std::stoi(fields[2]));
  }
  Network x(static_cast<int>(grade.size()));
  x.grade = std::move(grade);
  x.sex = std::move(sex);
  auto fe = detail::open_in(edge_path);
  std::getline(fe, line);  // header
  while (std::getline(fe, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 2) throw std::runtime_error("edge rows need two fields");
    const int i = std::stoi(fields[0]), j = std::stoi(fields[1]);
    if (i < 0 || j < 0 || i >= x.n || j >= x.n || i == j)
      throw std::runtime_error("edge endpoints out of range");
    x.set_edge(i, j, true);
  }
  x.validate();
  return x;
}

// Weekly case counts: "# population N" comment, then "week,cases".
inline void save_obs(const ObsSeries& obs, const std::string& path) {
  auto f = detail::open_out(path);
  f << "# population " << obs.population << '\n';
  f << "week,cases\n";
  for (int t = 0; t < obs.length(); ++t) f << (t + 1) << ',' << obs.cases[t] << '\n';
}

inline ObsSeries load_obs(const std::string& path) {
  auto f = detail::open_in(path);
  ObsSeries obs;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tag;
      if (ss >> tag && tag == "population" && !(ss >> obs.population))
        throw std::runtime_error("bad population comment: " + path);
      continue;
    }
    if (line.rfind("week,", 0) == 0) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 2) throw std::runtime_error("obs rows need two fields: " + path);
    obs.cases.push_back(std::stoll(fields[1]));
  }
  if (obs.population <= 0) throw std::runtime_error("obs file lacks '# population': " + path);
  obs.validate();
  return obs;
}

// Trace CSV: "iter,theta_1..theta_p,stage1_pass,stage2_accept,aux_sims,wall_ms"
// with a sidecar JSON (same path + ".meta.json") for run metadata.
inline void save_trace(const Trace& tr, const std::string& path) {
  auto f = detail::open_out(path);
  f.precision(17);
  const int p = static_cast<int>(tr.draws.cols());
  f << "iter";
  for (int j = 0; j < p; ++j) f << ",theta_" << (j + 1);
  f << ",stage1_pass,stage2_accept,aux_sims,wall_ms\n";
  for (int t = 0; t < tr.n_total(); ++t) {
    f << t;
    for (int j = 0; j < p; ++j) f << ',' << tr.draws(t, j);
    f << ',' << static_cast<int>(tr.stage1_pass[t]) << ','
      << static_cast<int>(tr.stage2_accept[t]) << ',' << tr.aux_sims[t] << ',' << tr.wall_ms[t]
      << '\n';
  }
  json meta;
  meta["seed"] = tr.seed;
  meta["config_hash"] = tr.config_hash;
  meta["burnin"] = tr.burnin;
  meta["has_stages"] = tr.has_stages;
  meta["final_scale"] = std::vector<double>(tr.final_scale.data(),
                                           tr.final_scale.data() + tr.final_scale.size());
  detail::open_out(path + ".meta.json") << meta.dump(2) << '\n';
}

inline Trace load_trace(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("trace file is empty: " + path);
  const auto header = detail::split_csv(line);
  if (header.size() < 6 || header.front() != "iter")
    throw std::runtime_error("unrecognized trace header: " + path);
  const int p = static_cast<int>(header.size()) - 5;
  std::vector<std::vector<double>> rows;
  Trace tr;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (static_cast<int>(fields.size()) != p + 5)
      throw std::runtime_error("trace row width mismatch: " + path);
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) row[j] = std::stod(fields[1 + j]);
    rows.push_back(std::move(row));
    tr.stage1_pass.push_back(static_cast<std::int8_t>(std::stoi(fields[p + 1])));
    tr.stage2_accept.push_back(static_cast<std::int8_t>(std::stoi(fields[p + 2])));
    tr.aux_sims.push_back(std::stoi(fields[p + 3]));
    tr.wall_ms.push_back(std::stod(fields[p + 4]));
  }
  tr.draws.resize(static_cast<int>(rows.size()), p);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (int j = 0; j < p; ++j) tr.draws(static_cast<int>(t), j) = rows[t][j];

  std::ifstream mf(path + ".meta.json");
  if (mf) {
    json meta = json::parse(mf);
    tr.seed = meta.value("seed", std::uint64_t{0});
    tr.config_hash = meta.value("config_hash", std::uint64_t{0});
    tr.burnin = meta.value("burnin", 0);
    tr.has_stages = meta.value("has_stages", false);
    const auto fs = meta.value("final_scale", std::vector<double>{});
    tr.final_scale = Eigen::Map<const Vec>(fs.data(), static_cast<int>(fs.size()));
  } else {
    for (auto v : tr.stage1_pass)
      if (v != -1) {
        tr.has_stages = true;
        break;
      }
  }
  return tr;
}

inline void save_emulator(const GPEmulator& em, const std::string& path) {
  json j;
  const int d = static_cast<int>(em.particles.rows());
  std::vector<std::vector<double>> pts(d, std::vector<double>(em.particles.cols()));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < em.particles.cols(); ++k) pts[i][k] = em.particles(i, k);
  j["particles"] = pts;
  j["z"] = std::vector<double>(em.z.data(), em.z.data() + em.z.size());
  j["sigma2"] = em.sigma2;
  j["range"] = em.range;
  j["nugget"] = em.nugget;
  j["linear_trend"] = em.linear_trend;
  detail::open_out(path) << j.dump(2) << '\n';
}

inline GPEmulator load_emulator(const std::string& path) {
  json j = json::parse(detail::open_in(path));
  GPEmulator em;
  const auto pts = j.at("particles").get<std::vector<std::vector<double>>>();
  if (pts.empty()) throw std::runtime_error("emulator has no particles: " + path);
  em.particles.resize(static_cast<int>(pts.size()), static_cast<int>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() != pts[0].size())
      throw std::runtime_error("ragged particle matrix: " + path);
    for (std::size_t k = 0; k < pts[i].size(); ++k)
      em.particles(static_cast<int>(i), static_cast<int>(k)) = pts[i][k];
  }
  const auto z = j.at("z").get<std::vector<double>>();
  em.z = Eigen::Map<const Vec>(z.data(), static_cast<int>(z.size()));
  em.sigma2 = j.at("sigma2").get<double>();
  em.range = j.at("range").get<double>();
  em.nugget = j.at("nugget").get<double>();
  em.linear_trend = j.value("linear_trend", true);
  em.refit_factorization();  // beta/alpha are recomputed, not stored
  return em;
}

// Gaussian approximation: point estimate plus observed information matrix.
inline void save_freq(const Vec& theta_hat, const Mat& fisher, const std::string& path) {
  json j;
  j["theta_hat"] = std::vector<double>(theta_hat.data(), theta_hat.data() + theta_hat.size());
  std::vector<std::vector<double>> f(fisher.rows(), std::vector<double>(fisher.cols()));
  for (int i = 0; i < fisher.rows(); ++i)
    for (int k = 0; k < fisher.cols(); ++k) f[i][k] = fisher(i, k);
  j["fisher"] = f;
  detail::open_out(path) << j.dump(2) << '\n';
}

inline std::pair<Vec, Mat> load_freq(const std::string& path) {
  json j = json::parse(detail::open_in(path));
  const auto th = j.at("theta_hat").get<std::vector<double>>();
  const auto fr = j.at("fisher").get<std::vector<std::vector<double>>>();
  Vec theta_hat = Eigen::Map<const Vec>(th.data(), static_cast<int>(th.size()));
  Mat fisher(static_cast<int>(fr.size()), static_cast<int>(fr.empty() ? 0 : fr[0].size()));
  for (std::size_t i = 0; i < fr.size(); ++i)
    for (std::size_t k = 0; k < fr[i].size(); ++k)
      fisher(static_cast<int>(i), static_cast<int>(k)) = fr[i][k];
  if (fisher.rows() != theta_hat.size() || fisher.cols() != theta_hat.size())
    throw std::runtime_error("fisher shape mismatch: " + path);
  return {theta_hat, fisher};
}

inline void save_particles(const Mat& particles, const std::string& path) {
  auto f = detail::open_out(path);
  f.precision(17);
  for (int j = 0; j < particles.cols(); ++j) f << (j ? "," : "") << "theta_" << (j + 1);
  f << '\n';
  for (int i = 0; i < particles.rows(); ++i) {
    for (int j = 0; j < particles.cols(); ++j) f << (j ? "," : "") << particles(i, j);
    f << '\n';
  }
}

inline Mat load_particles(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("particle file is empty: " + path);
  const int p = static_cast<int>(detail::split_csv(line).size());
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (static_cast<int>(fields.size()) != p)
      throw std::runtime_error("particle row width mismatch: " + path);
    std::vector<double> row(p);
    for (int j = 0; j < p; ++j) row[j] = std::stod(fields[j]);
    rows.push_back(std::move(row));
  }
  Mat out(static_cast<int>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < p; ++j) out(static_cast<int>(i), j) = rows[i][j];
  return out;
}

}  // namespace daavm

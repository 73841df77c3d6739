#include "bregman/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bregman/rng.hpp"
#include "json.hpp"

namespace bregman {

WeightedPointSet unit_weights(const PointSet& ps) {
  WeightedPointSet ws;
  ws.points = ps.points;
  ws.weights = Eigen::VectorXd::Ones(ps.n());
  ws.origin_n = ps.n();
  return ws;
}

namespace {

bool parse_double(std::string_view token, double& out) {
  // Trim surrounding spaces and an optional CR left by Windows line endings.
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() &&
         (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (token.empty()) return false;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

struct CsvTable {
  std::vector<double> values;  // row-major
  Index rows = 0;
  Index cols = 0;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("data: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  long line_no = 0;
  bool first_data_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      double v;
      if (!parse_double(token, v) || !std::isfinite(v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      if (first_data_row) continue;  // header line
      std::ostringstream msg;
      msg << "data: '" << path << "' line " << line_no << ": non-numeric cell";
      throw ParseError(msg.str());
    }
    if (first_data_row) {
      table.cols = static_cast<Index>(row.size());
      first_data_row = false;
    } else if (static_cast<Index>(row.size()) != table.cols) {
      std::ostringstream msg;
      msg << "data: '" << path << "' line " << line_no << ": expected " << table.cols
          << " columns, got " << row.size();
      throw ParseError(msg.str());
    }
    table.values.insert(table.values.end(), row.begin(), row.end());
    ++table.rows;
  }
  if (table.rows == 0) throw ParseError("data: '" + path + "' contains no data rows");
  return table;
}

}  // namespace

PointSet load_points(const std::string& path, PointFormat) {
  const CsvTable table = read_csv(path);
  PointSet ps;
  ps.points.resize(table.rows, table.cols);
  std::copy(table.values.begin(), table.values.end(), ps.points.data());
  return ps;
}

void save_points(const PointSet& ps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("data: cannot write '" + path + "'");
  std::string buf;
  buf.reserve(static_cast<std::size_t>(ps.n()) * 16);
  for (Index i = 0; i < ps.n(); ++i) {
    for (Index j = 0; j < ps.dim(); ++j) {
      if (j) buf.push_back(',');
      append_double(buf, ps.points(i, j));
    }
    buf.push_back('\n');
  }
  out << buf;
}

ClampedPoints clamp_to_domain(const PointSet& ps, const DivergenceSpec& spec) {
  if (!spec.has_box())
    throw std::invalid_argument("data: clamp_to_domain requires a box-domain divergence");
  if (ps.dim() != spec.dim())
    throw std::invalid_argument("data: clamp_to_domain dimension mismatch");
  ClampedPoints result;
  result.points = ps;
  const double lo = spec.domain_low();
  const double hi = spec.domain_high();
  double* data = result.points.points.data();
  const Index total = ps.n() * ps.dim();
  for (Index i = 0; i < total; ++i) {
    if (data[i] < lo) {
      data[i] = lo;
      ++result.clamped_coordinates;
    } else if (data[i] > hi) {
      data[i] = hi;
      ++result.clamped_coordinates;
    }
  }
  return result;
}

PointSet standardize(const PointSet& ps) {
  PointSet out;
  out.points = ps.points;
  for (Index j = 0; j < ps.dim(); ++j) {
    const double mean = ps.points.col(j).mean();
    const double var = (ps.points.col(j).array() - mean).square().sum() /
                       std::max<Index>(1, ps.n() - 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0)
      out.points.col(j) = (ps.points.col(j).array() - mean) / sd;
    else
      out.points.col(j) = ps.points.col(j).array() - mean;
  }
  return out;
}

std::pair<PointSet, MixtureTruth> gen_gaussian_mixture(std::uint64_t seed, Index n, Index k,
                                                       Index d, double dirichlet_alpha,
                                                       double mean_var, double comp_var) {
  if (n < 1 || k < 1 || d < 1)
    throw std::invalid_argument("data: gen_gaussian_mixture requires n, k, d >= 1");
  if (!(dirichlet_alpha > 0.0) || !(mean_var > 0.0) || !(comp_var > 0.0))
    throw std::invalid_argument("data: gen_gaussian_mixture requires positive parameters");
  RandomStream rng(seed);

  MixtureTruth truth;
  truth.component_weights.resize(k);
  rng.dirichlet(dirichlet_alpha, {truth.component_weights.data(),
                                  static_cast<std::size_t>(k)});
  const double mean_sd = std::sqrt(mean_var);
  truth.component_params.resize(k, d);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < d; ++i) truth.component_params(j, i) = mean_sd * rng.normal();

  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (Index j = 0; j < k; ++j) {
    acc += truth.component_weights(j);
    cumulative[j] = acc;
  }

  PointSet ps;
  ps.points.resize(n, d);
  truth.assignment.resize(n);
  const double comp_sd = std::sqrt(comp_var);
  for (Index i = 0; i < n; ++i) {
    const auto label = static_cast<Index>(sample_cumulative(cumulative, rng));
    truth.assignment[i] = static_cast<int>(label);
    for (Index j = 0; j < d; ++j)
      ps.points(i, j) = truth.component_params(label, j) + comp_sd * rng.normal();
  }
  return {std::move(ps), std::move(truth)};
}

std::pair<PointSet, MixtureTruth> gen_poisson_mixture(std::uint64_t seed, Index n, Index k,
                                                      Index d, double gamma_shape,
                                                      double gamma_rate) {
  if (n < 1 || k < 1 || d < 1)
    throw std::invalid_argument("data: gen_poisson_mixture requires n, k, d >= 1");
  if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0))
    throw std::invalid_argument("data: gen_poisson_mixture requires positive parameters");
  RandomStream rng(seed);

  MixtureTruth truth;
  truth.component_weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  truth.component_params.resize(k, d);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < d; ++i) truth.component_params(j, i) = rng.gamma(gamma_shape, gamma_rate);

  PointSet ps;
  ps.points.resize(n, d);
  truth.assignment.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto label = static_cast<Index>(rng.below(static_cast<std::uint64_t>(k)));
    truth.assignment[i] = static_cast<int>(label);
    for (Index j = 0; j < d; ++j)
      ps.points(i, j) = static_cast<double>(rng.poisson(truth.component_params(label, j)));
  }
  return {std::move(ps), std::move(truth)};
}

void save_weighted(const WeightedPointSet& ws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("data: cannot write '" + path + "'");
  std::string buf;
  for (Index i = 0; i < ws.m(); ++i) {
    for (Index j = 0; j < ws.dim(); ++j) {
      append_double(buf, ws.points(i, j));
      buf.push_back(',');
    }
    append_double(buf, ws.weights(i));
    buf.push_back('\n');
  }
  out << buf;
  nlohmann::json sidecar;
  sidecar["origin_n"] = ws.origin_n;
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("data: cannot write '" + path + ".json'");
  side << sidecar.dump() << "\n";
}

WeightedPointSet load_weighted(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.cols < 2)
    throw ParseError("data: '" + path + "' needs at least one coordinate and a weight column");
  WeightedPointSet ws;
  const Index d = table.cols - 1;
  ws.points.resize(table.rows, d);
  ws.weights.resize(table.rows);
  for (Index i = 0; i < table.rows; ++i) {
    for (Index j = 0; j < d; ++j) ws.points(i, j) = table.values[i * table.cols + j];
    const double w = table.values[i * table.cols + d];
    if (!(w > 0.0) || !std::isfinite(w)) {
      std::ostringstream msg;
      msg << "data: '" << path << "' row " << i + 1 << ": weight must be positive and finite";
      throw ParseError(msg.str());
    }
    ws.weights(i) = w;
  }
  ws.origin_n = table.rows;
  std::ifstream side(path + ".json");
  if (side) {
    try {
      nlohmann::json sidecar;
      side >> sidecar;
      ws.origin_n = sidecar.at("origin_n").get<std::int64_t>();
      if (ws.origin_n < 1) throw ParseError("data: sidecar origin_n must be >= 1");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("data: bad sidecar '" + path + ".json': " + e.what());
    }
  } else {
    std::cerr << "data: warning: no sidecar '" << path
              << ".json'; origin_n defaults to row count " << table.rows << "\n";
  }
  return ws;
}

}  // namespace bregman

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfs/error.hpp"
#include "cfs/gmm.hpp"

namespace cfs::gmm {
namespace {

using nlohmann::json;

constexpr int kModelVersion = 1;

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, std::size_t expected, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != expected) throw ParseError(std::string("model file: ") + what + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(expected));
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  const Gmm& g = model.joint;
  json j;
  j["format"] = "cfswitch-gmm";
  j["version"] = kModelVersion;
  j["dt"] = model.dt;
  j["history_s"] = model.history_s;
  j["horizon_s"] = model.horizon_s;
  json layout = json::array();
  for (const auto& b : g.layout().blocks()) layout.push_back({{"name", b.name}, {"size", b.size}});
  j["layout"] = layout;
  j["scaler"] = {{"mean", to_json(model.scaler.mean)}, {"scale", to_json(model.scaler.scale)}};
  j["weights"] = g.weights();
  json means = json::array(), covs = json::array();
  for (std::size_t c = 0; c < g.k(); ++c) {
    means.push_back(to_json(g.mean(c)));
    const Matrix row_major = g.cov(c).transpose();
    covs.push_back(std::vector<double>(row_major.data(), row_major.data() + row_major.size()));
  }
  j["means"] = means;
  j["covariances"] = covs;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << j.dump(1) << '\n';
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }
  try {
    if (j.value("version", 0) != kModelVersion) throw ParseError("model file " + path.string() + ": unsupported version");
    std::vector<std::pair<std::string, std::size_t>> blocks;
    for (const auto& b : j.at("layout")) blocks.emplace_back(b.at("name").get<std::string>(), b.at("size").get<std::size_t>());
    FeatureLayout layout(blocks);
    const std::size_t d = layout.dim();
    ModelFile m;
    m.dt = j.at("dt").get<double>();
    m.history_s = j.at("history_s").get<double>();
    m.horizon_s = j.at("horizon_s").get<double>();
    m.scaler.mean = vector_from(j.at("scaler").at("mean"), d, "scaler mean");
    m.scaler.scale = vector_from(j.at("scaler").at("scale"), d, "scaler scale");
    const auto weights = j.at("weights").get<std::vector<double>>();
    const auto& jm = j.at("means");
    const auto& jc = j.at("covariances");
    if (jm.size() != weights.size() || jc.size() != weights.size()) throw ParseError("model file: component arrays differ in length");
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      means.push_back(vector_from(jm[c], d, "mean"));
      const Vector flat = vector_from(jc[c], d * d, "covariance");
      // row-major on disk; the transpose of a symmetric matrix is itself
      Matrix cov = Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)).transpose();
      covs.push_back(std::move(cov));
    }
    m.joint = Gmm(std::move(layout), weights, std::move(means), std::move(covs));
    return m;
  } catch (const json::exception& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Matrix& data, const FeatureLayout& layout) {
  if (static_cast<std::size_t>(data.cols()) != layout.dim()) throw ArgumentError("write_dataset_csv: column count mismatch");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# layout: " << layout.describe() << '\n';
  bool first = true;
  for (const auto& b : layout.blocks())
    for (std::size_t i = 0; i < b.size; ++i) {
      out << (first ? "" : ",") << b.name << '_' << i;
      first = false;
    }
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", data(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

Matrix read_dataset_csv(const std::filesystem::path& path, FeatureLayout* layout) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# layout: ", 0) != 0) throw ParseError("dataset CSV lacks a layout comment", 1);
  const FeatureLayout lay = FeatureLayout::parse(line.substr(10));
  if (!std::getline(in, line)) throw ParseError("dataset CSV lacks a header", 2);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError("dataset CSV: bad number '" + cell + "'", lineno);
      }
    }
    if (row.size() != lay.dim()) throw ParseError("dataset CSV: expected " + std::to_string(lay.dim()) + " fields", lineno);
    rows.push_back(std::move(row));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(lay.dim()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < lay.dim(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (layout) *layout = lay;
  return out;
}

}  // namespace cfs::gmm

#include "idlegrad/data.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

namespace idlegrad {

SyntheticData gen_synthetic(int n_nodes, int j_per_node, int dim_minus_1,
                            double noise_sd, Rng& rng) {
  if (n_nodes < 1 || j_per_node < 1 || dim_minus_1 < 1)
    throw std::invalid_argument("synthetic data counts must be positive");
  if (noise_sd < 0.0)
    throw std::invalid_argument("noise standard deviation must be >= 0");

  const int d = dim_minus_1 + 1;
  Eigen::VectorXd true_x(d);
  for (int i = 0; i < d; ++i) true_x(i) = rng.normal();

  const int total = n_nodes * j_per_node;
  Dataset all;
  all.features.resize(total, dim_minus_1);
  all.labels.resize(total);
  for (int s = 0; s < total; ++s) {
    for (int c = 0; c < dim_minus_1; ++c) all.features(s, c) = rng.normal();
    const double noise = rng.normal(0.0, noise_sd);
    const double margin =
        true_x.head(dim_minus_1).dot(all.features.row(s)) +
        true_x(dim_minus_1) + noise;
    all.labels[s] = margin >= 0.0 ? 1 : -1;  // sign(0) = +1
  }

  SyntheticData out;
  out.true_x = std::move(true_x);
  out.shards = partition(all, n_nodes);
  return out;
}

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw std::invalid_argument("libsvm parse error at line " +
                              std::to_string(line) + ": " + what);
}

}  // namespace

Dataset parse_libsvm(const std::string& text, int configured_dim) {
  std::vector<std::vector<std::pair<int, double>>> sparse;  // 0-based indices
  std::vector<int> labels;
  int max_index = 0;  // 1-based

  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tok(line);
    std::string label_tok;
    if (!(tok >> label_tok)) continue;  // blank line

    int label = 0;
    if (label_tok == "+1" || label_tok == "1") label = 1;
    else if (label_tok == "-1") label = -1;
    else parse_error(line_no, "label must be +1 or -1, got '" + label_tok + "'");

    std::vector<std::pair<int, double>> feats;
    std::string pair_tok;
    int prev_index = 0;
    while (tok >> pair_tok) {
      const auto colon = pair_tok.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == pair_tok.size())
        parse_error(line_no, "expected <index>:<value>, got '" + pair_tok + "'");
      char* end = nullptr;
      const long idx = std::strtol(pair_tok.c_str(), &end, 10);
      if (end != pair_tok.c_str() + colon)
        parse_error(line_no, "bad feature index in '" + pair_tok + "'");
      if (idx <= 0)
        parse_error(line_no, "feature indices are 1-based and positive");
      if (idx <= prev_index)
        parse_error(line_no, "feature indices must be strictly increasing");
      const char* val_begin = pair_tok.c_str() + colon + 1;
      const double val = std::strtod(val_begin, &end);
      if (end != pair_tok.c_str() + pair_tok.size())
        parse_error(line_no, "bad feature value in '" + pair_tok + "'");
      prev_index = static_cast<int>(idx);
      max_index = std::max(max_index, prev_index);
      feats.emplace_back(prev_index - 1, val);
    }
    sparse.push_back(std::move(feats));
    labels.push_back(label);
  }

  if (configured_dim > 0 && max_index > configured_dim)
    throw std::invalid_argument(
        "libsvm data has feature index " + std::to_string(max_index) +
        " beyond the configured dimension " + std::to_string(configured_dim));
  const int dim = configured_dim > 0 ? configured_dim : max_index;

  Dataset ds;
  ds.features = Eigen::MatrixXd::Zero(static_cast<int>(sparse.size()), dim);
  ds.labels = std::move(labels);
  for (size_t s = 0; s < sparse.size(); ++s)
    for (const auto& [idx, val] : sparse[s])
      ds.features(static_cast<int>(s), idx) = val;
  return ds;
}

std::string serialize_libsvm(const Dataset& ds) {
  std::string out;
  char buf[64];
  for (int s = 0; s < ds.sample_count(); ++s) {
    out += ds.labels[s] > 0 ? "+1" : "-1";
    for (int c = 0; c < ds.feature_dim(); ++c) {
      const double v = ds.features(s, c);
      if (v == 0.0) continue;
      std::snprintf(buf, sizeof(buf), " %d:%.17g", c + 1, v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

NodeShards partition(const Dataset& ds, int n_nodes) {
  if (n_nodes < 1) throw std::invalid_argument("need at least one node");
  if (ds.sample_count() < n_nodes)
    throw std::invalid_argument("fewer samples than nodes");
  const int per_node = ds.sample_count() / n_nodes;

  NodeShards shards;
  shards.n_nodes = n_nodes;
  shards.per_node = per_node;
  shards.shards.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    Dataset shard;
    shard.features = ds.features.middleRows(i * per_node, per_node);
    shard.labels.assign(ds.labels.begin() + i * per_node,
                        ds.labels.begin() + (i + 1) * per_node);
    shards.shards.push_back(std::move(shard));
  }
  return shards;
}

LogisticModel to_logistic_model(const NodeShards& shards,
                                double regularizer) {
  LogisticModel model;
  model.regularizer = regularizer;
  model.samples.reserve(shards.shards.size());
  for (const auto& shard : shards.shards) {
    const int j = shard.sample_count();
    const int dm1 = shard.feature_dim();
    Eigen::MatrixXd rows(j, dm1 + 1);
    for (int r = 0; r < j; ++r) {
      rows.row(r).head(dm1) = shard.labels[r] * shard.features.row(r);
      rows(r, dm1) = shard.labels[r];
    }
    model.samples.push_back(std::move(rows));
  }
  return model;
}

}  // namespace idlegrad

#pragma once

// Slow, obviously-correct reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ptl/geometry.hpp"
#include "ptl/model.hpp"

namespace oracle {

using ptl::Point3;

inline std::vector<Point3> random_cloud(std::mt19937_64& rng, std::size_t n, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

// Recomputes every candidate's distance to the picked set from scratch each round.
inline std::vector<std::size_t> fps(const std::vector<Point3>& pts, std::size_t m, std::size_t start) {
  std::vector<std::size_t> picked{start};
  while (picked.size() < m) {
    std::size_t best = pts.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (auto p : picked) d = std::min(d, ptl::squared_distance(pts[i], pts[p]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

// Full sort of all candidates by (distance, index).
inline std::vector<std::vector<std::uint32_t>> knn(const std::vector<Point3>& ref,
                                                   const std::vector<Point3>& queries, std::size_t k,
                                                   bool self_first) {
  std::vector<std::vector<std::uint32_t>> rows;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (self_first && j == q) continue;
      all.emplace_back(ptl::squared_distance(queries[q], ref[j]), static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> row;
    if (self_first) row.push_back(static_cast<std::uint32_t>(q));
    for (std::size_t j = 0; row.size() < k; ++j) row.push_back(all[j].second);
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<double> dense(const ptl::Dense& d, const std::vector<double>& x) {
  const std::size_t in = d.weight.dim(0), out = d.weight.dim(1);
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = d.bias[o];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * d.weight[i * out + o];
    y[o] = s;
  }
  return y;
}

inline std::vector<double> relu(std::vector<double> v) {
  for (auto& x : v) x = std::max(x, 0.0);
  return v;
}

struct LayerResult {
  std::vector<std::vector<double>> y;                    // N × C
  std::vector<std::vector<std::vector<double>>> weights;  // N × k × C
};

// One point, one neighbor, one channel at a time.
inline LayerResult attention_layer(const std::vector<std::vector<double>>& x,
                                   const std::vector<Point3>& pos, const ptl::NeighborIndex& nbr,
                                   const ptl::LayerParams& p, bool scalar = false) {
  const std::size_t n = x.size(), c = x[0].size(), k = nbr.k;
  LayerResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = dense(p.phi, x[i]);
    std::vector<std::vector<double>> logits(k), values(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t nj = nbr.at(i, j);
      std::vector<double> rel(3);
      for (int a = 0; a < 3; ++a) rel[a] = pos[i][a] - pos[nj][a];
      const auto delta = dense(p.pos2, relu(dense(p.pos1, rel)));
      const auto key = dense(p.psi, x[nj]);
      auto val = dense(p.alpha, x[nj]);
      std::vector<double> pre(c);
      for (std::size_t ch = 0; ch < c; ++ch) {
        pre[ch] = q[ch] - key[ch] + delta[ch];
        val[ch] += delta[ch];
      }
      logits[j] = dense(p.gamma2, relu(dense(p.gamma1, pre)));
      if (scalar) {
        double mean = 0.0;
        for (double v : logits[j]) mean += v / static_cast<double>(c);
        std::fill(logits[j].begin(), logits[j].end(), mean);
      }
      values[j] = val;
    }
    std::vector<std::vector<double>> w(k, std::vector<double>(c));
    std::vector<double> y = x[i];
    for (std::size_t ch = 0; ch < c; ++ch) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) m = std::max(m, logits[j][ch]);
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += std::exp(logits[j][ch] - m);
      for (std::size_t j = 0; j < k; ++j) {
        w[j][ch] = std::exp(logits[j][ch] - m) / s;
        y[ch] += w[j][ch] * values[j][ch];
      }
    }
    r.y.push_back(y);
    r.weights.push_back(w);
  }
  return r;
}

}  // namespace oracle
